fn main() {
    std::process::exit(gpc_mc::cli::main());
}
