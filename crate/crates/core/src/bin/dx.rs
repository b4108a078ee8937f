fn main() {
    std::process::exit(dx::cli::run(std::env::args_os()));
}
