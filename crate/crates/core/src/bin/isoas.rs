fn main() {
    std::process::exit(isoas::cli::main());
}
