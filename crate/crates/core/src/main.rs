fn main() {
    std::process::exit(tipsense::cli::main_with_args(std::env::args_os()));
}
