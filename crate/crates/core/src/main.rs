use std::process::ExitCode;

fn main() -> ExitCode {
    let code = moe_guide::cli::cli_main(std::env::args_os());
    ExitCode::from(code.clamp(0, 255) as u8)
}
