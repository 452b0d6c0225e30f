fn main() {
    std::process::exit(skycast::cli::run(std::env::args_os()));
}
