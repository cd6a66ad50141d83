fn main() {
    std::process::exit(cfkgr::cli::run(std::env::args_os()));
}
