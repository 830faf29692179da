fn main() {
    std::process::exit(pvx::main_with(std::env::args_os()));
}
