fn main() {
    std::process::exit(rydberg_cli::cli_main(std::env::args()));
}
