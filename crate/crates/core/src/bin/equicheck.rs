fn main() {
    std::process::exit(equicheck::cli::run(std::env::args_os()));
}
