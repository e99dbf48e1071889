fn main() {
    std::process::exit(nsch_core::cli::main());
}
