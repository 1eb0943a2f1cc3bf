fn main() {
    std::process::exit(wikitables::run(std::env::args_os()));
}
