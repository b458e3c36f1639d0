fn main() {
    std::process::exit(steer::cli::main_entry());
}
