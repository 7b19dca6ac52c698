fn main() {
    std::process::exit(nucnorm::cli::run(std::env::args_os()));
}
