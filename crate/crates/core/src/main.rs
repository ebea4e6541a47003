fn main() {
    std::process::exit(demon_battery::cli::run(std::env::args_os()));
}
