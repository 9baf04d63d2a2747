fn main() {
    std::process::exit(dfe_track::cli::main_with_args(std::env::args_os()));
}
