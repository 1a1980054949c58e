fn main() {
    std::process::exit(seirfit::main_with_args(std::env::args_os()));
}
