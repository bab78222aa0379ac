fn main() {
    std::process::exit(lensdepth::cli::run(std::env::args_os()));
}
