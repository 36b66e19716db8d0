fn main() {
    std::process::exit(fheede::cli::main_with(std::env::args_os()));
}
