fn main() {
    std::process::exit(upconv::cli::run(std::env::args_os()));
}
