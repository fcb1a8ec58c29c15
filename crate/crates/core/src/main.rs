fn main() {
    std::process::exit(hopchain::cli::run(std::env::args_os()));
}
