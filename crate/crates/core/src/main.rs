fn main() {
    std::process::exit(dimcurse::cli::main());
}
