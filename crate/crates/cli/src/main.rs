fn main() {
    let code = hsb_cli::commands::main_with_args(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
