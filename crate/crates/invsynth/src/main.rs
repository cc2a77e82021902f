fn main() {
    std::process::exit(invsynth::cli::run(std::env::args_os()));
}
