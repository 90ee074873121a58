fn main() {
    std::process::exit(iuws_cli::run(std::env::args_os()));
}
