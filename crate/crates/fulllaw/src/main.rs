fn main() {
    std::process::exit(fulllaw::cli::run(std::env::args_os()));
}
