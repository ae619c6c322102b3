fn main() {
    std::process::exit(semihdp::cli::main_entry());
}
