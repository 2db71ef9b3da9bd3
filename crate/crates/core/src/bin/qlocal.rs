fn main() {
    std::process::exit(qlocal::cli::main_with_args(std::env::args_os()));
}
