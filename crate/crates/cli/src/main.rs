fn main() { println!("jjsim"); }
