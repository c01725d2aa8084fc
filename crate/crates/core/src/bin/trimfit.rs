fn main() {
    std::process::exit(trimfit::cli::run(std::env::args_os()));
}
