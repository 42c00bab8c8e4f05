fn main() {
    std::process::exit(gpmat::cli::run(std::env::args_os()));
}
