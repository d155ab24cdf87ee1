fn main() {
    std::process::exit(ullgm::cli::main());
}
