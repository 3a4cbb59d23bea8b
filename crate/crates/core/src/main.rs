fn main() {
    std::process::exit(crlab::cli::main_with(std::env::args().collect()));
}
