fn main() {
    std::process::exit(detfuse::cli::main(std::env::args_os()));
}
