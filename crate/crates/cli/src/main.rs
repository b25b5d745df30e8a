fn main() {
    std::process::exit(perdyn_cli::run(std::env::args_os()));
}
