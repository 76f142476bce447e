fn main() {
    std::process::exit(phnlab::run(std::env::args_os()));
}
