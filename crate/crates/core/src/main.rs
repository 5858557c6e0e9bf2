fn main() {
    std::process::exit(avalanche::harness::cli_main(std::env::args_os()));
}
