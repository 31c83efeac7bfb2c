fn main() {
    let code = ultradiff_cli::parse_and_dispatch(std::env::args().collect());
    std::process::exit(code);
}
