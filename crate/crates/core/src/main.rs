fn main() {
    std::process::exit(lme::cli::run(std::env::args_os()));
}
