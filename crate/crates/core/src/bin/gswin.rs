fn main() {
    std::process::exit(gswin::cli::run(std::env::args_os()));
}
