fn main() {
    std::process::exit(pamq_cli::run(std::env::args_os()));
}
