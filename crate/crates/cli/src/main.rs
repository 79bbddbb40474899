fn main() {
    std::process::exit(fishbone_cli::main_with(std::env::args_os()));
}
