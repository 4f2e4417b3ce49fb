fn main() {
    std::process::exit(bundlegen::cli::run(std::env::args_os()));
}
