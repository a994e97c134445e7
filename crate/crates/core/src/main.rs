fn main() {
    std::process::exit(szego_lab::cli::main_with(std::env::args_os()));
}
