fn main() {
    std::process::exit(srsense::bench::cli_main(std::env::args_os()));
}
