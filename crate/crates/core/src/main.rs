fn main() {
    std::process::exit(metaverify::cli::run(std::env::args_os()));
}
