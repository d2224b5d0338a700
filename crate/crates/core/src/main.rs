fn main() {
    std::process::exit(nmsysid::cli::run(std::env::args_os()));
}
