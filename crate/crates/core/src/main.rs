fn main() {
    std::process::exit(cleantest::cli::run(std::env::args_os()));
}
