fn main() {
    std::process::exit(kan_credit::cli::run(std::env::args_os()));
}
