fn main() {
    std::process::exit(awgn_flb::cli::run(std::env::args_os()));
}
