fn main() {
    std::process::exit(mccrf::cli::run(std::env::args_os()));
}
