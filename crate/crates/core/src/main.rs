fn main() {
    std::process::exit(ties::cli::run(std::env::args_os()));
}
