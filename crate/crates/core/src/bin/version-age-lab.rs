fn main() {
    std::process::exit(version_age_lab::cli::main_entry(std::env::args_os()));
}
