fn main() {
    std::process::exit(nsopt_cli::cli_main(std::env::args_os()));
}
