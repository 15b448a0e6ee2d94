fn main() {
    std::process::exit(equitax::cli::main_with_args(std::env::args_os()));
}
