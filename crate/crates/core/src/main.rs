fn main() {
    std::process::exit(psid::cli::cli_main(std::env::args_os()));
}
