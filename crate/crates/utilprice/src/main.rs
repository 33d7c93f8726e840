fn main() {
    std::process::exit(utilprice::cli::main_with_args(std::env::args_os()));
}
