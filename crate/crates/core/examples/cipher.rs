//! Probe encryption on the door unit and decryption on the controller.
//!
//! The transform is a repeating-key XOR, so one function does both.

use officegate::tag::tagged_buffer;
use officegate::{xor_transform, CipherKey};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let key = CipherKey::from_hex("6f6666696365676174652d64656d6f2d6b6579")?;
    let probe = tagged_buffer("anna01", b"\xff\xd8\xff\xe0 camera frame");

    let sealed = xor_transform(&probe, &key);
    let opened = xor_transform(&sealed, &key);

    println!("key      {} bytes", key.len());
    println!("probe    {}", hex::encode(&probe));
    println!("sealed   {}", hex::encode(&sealed));
    println!("restored {}", opened == probe);

    // Short keys are refused outright.
    match CipherKey::from_hex("0011") {
        Ok(_) => println!("short key accepted?"),
        Err(e) => println!("short key: {e}"),
    }
    Ok(())
}
