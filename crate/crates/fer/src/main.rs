fn main() {
    std::process::exit(fer::cli::run(std::env::args_os()));
}
