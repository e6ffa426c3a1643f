fn main() {
    std::process::exit(babenko::cli::run(std::env::args_os()));
}
