fn main() {
    std::process::exit(tumorsim::cli::cli_main(std::env::args_os()));
}
