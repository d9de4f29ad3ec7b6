fn main() {
    std::process::exit(paired_equiv::cli::main());
}
