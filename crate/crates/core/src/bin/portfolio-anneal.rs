fn main() {
    std::process::exit(portfolio_anneal::cli::main_with_args(std::env::args_os()));
}
