fn main() {
    std::process::exit(ising_concentration::cli::main_with_args(std::env::args_os()));
}
