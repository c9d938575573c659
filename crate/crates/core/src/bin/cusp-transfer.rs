fn main() {
    std::process::exit(cusp_transfer::cli::main_from_env());
}
