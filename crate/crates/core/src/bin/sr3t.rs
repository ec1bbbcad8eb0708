fn main() {
    std::process::exit(sr3t::cli::main_with_args(std::env::args_os()));
}
