fn main() {
    std::process::exit(idks::cli::main_with_args(std::env::args_os()));
}
