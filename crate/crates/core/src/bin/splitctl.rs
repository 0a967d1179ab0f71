fn main() {
    std::process::exit(splitctl::cli::main());
}
