fn main() {
    std::process::exit(htrw::cli::run(std::env::args_os()));
}
