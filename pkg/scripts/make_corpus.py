#!/usr/bin/env python3
"""Regenerate the bundled replay corpus under src/arsec/corpus/.

Four speakers, one image + one audio each, 30 seconds apart, 10 minutes
between speakers. Audio fixtures are silent WAVs (the mock transcription
backend reads the sidecar, not the samples) kept tiny with a 1 kHz frame
rate. Slice lines repeat a trailing sentence to mimic window overlap.
"""
import json
import sys
import wave
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from arsec.audio import plan_slices  # noqa: E402

OUT = Path(__file__).resolve().parent.parent / "src" / "arsec" / "corpus"

SPEAKERS = [
    {
        "label": "josh",
        "image": "20240601-090000.jpg",
        "audio": "20240601-090030.wav",
        "duration": 80,
        "speech": (
            "My name is Josh. I would like to talk to you about my start-up. "
            "I am an alumnus of Tsinghua University. I majored in Computer science and graduated recently. "
            "I am planning to launch a company in Chengdu in 2025. "
            "This start up would be about a Smart-Ring mixed with wedding ring. "
            "The name of the company is Voilier, a fancy name using French word. "
            "We want to develop a smart ring with luxury aspect, very thin. "
            "The ring will have many features like sleep tracking, sport mode, heart rate, oxygen in the blood. "
            "But you can also use the ring to control your laptop and computer. "
            "We are working with jewel expert from Switzerland to build a luxury ring. "
            "We planned to release 3 models: a diamond one, a gold one and a silver one. "
            "I am currently recruiting Tsinghua Student for several positions: Software engineer, marketing position, international business associate. "
            "We nevertheless require B2 level of English. "
            "For any business-related job, we require C1 as we have many stakeholders in United Kingdom and Ireland. "
            "We would also like to create an office in Geneva, to be close the expert. "
            "I only use email and Twitter. I will give you my email later."
        ),
        "reply": {
            "note": "- Josh is a Tsinghua alumnus launching a startup in Chengdu in 2025\n"
                    "- The product is a luxury smart ring mixed with a wedding ring, company name Voilier\n"
                    "- Features include sleep tracking, sport mode, heart rate and blood oxygen\n"
                    "- The ring can control laptops and phones through customizable gestures\n"
                    "- Three models planned: diamond, gold and silver, built with Swiss jewel experts\n"
                    "- Recruiting Tsinghua students: software engineer, marketing, international business\n"
                    "- English B2 required, C1 for business roles; stakeholders in the UK and Ireland\n"
                    "- A Geneva office is planned; Josh uses email and Twitter only",
            "short_summary": "Josh from the startup Voilier discussed plans for a luxury smart ring with health tracking features, recruitment of Tsinghua students, and a launch in Chengdu in 2025.",
            "todo": [
                "Email Josh if interested in the positions available",
                "Research more about the startup Voilier",
            ],
            "name": "Josh",
        },
    },
    {
        "label": "sophia",
        "image": "20240601-091000.jpg",
        "audio": "20240601-091030.wav",
        "duration": 70,
        "speech": (
            "My name is Sophia. I would like to share details about my innovative project. "
            "I graduated from MIT with a major in Electrical Engineering. "
            "I am planning to establish a company in Seoul in 2025. "
            "This start-up will focus on VR Glasses designed for educational purposes. "
            "The company will be called Envision, inspired by the vision of a smarter future. "
            "Our aim is to develop VR glasses that are sleek and lightweight, suitable for daily use. "
            "The glasses will offer interactive learning modules, real-time translation, and augmented reality enhancements. "
            "They will include sensors that detect eye movements and gestures. "
            "We are partnering with top tech firms to integrate advanced AI algorithms. "
            "We plan to introduce three distinct models for STEM education, language learning, and creative arts. "
            "Additionally, we intend to establish an office in Busan to collaborate closely with our manufacturing partners. "
            "We offer complimentary meals and accommodation."
        ),
        "reply": {
            "note": "- Sophia graduated from MIT in Electrical Engineering\n"
                    "- She is founding Envision in Seoul in 2025, focused on educational VR glasses\n"
                    "- The glasses offer interactive learning modules, real-time translation and AR enhancements\n"
                    "- Eye movement and gesture sensors control devices and content\n"
                    "- Three models planned: STEM education, language learning, creative arts\n"
                    "- An office in Busan will sit close to manufacturing partners\n"
                    "- Compensation includes complimentary meals and accommodation",
            "short_summary": "Sophia discussed her project of developing educational VR glasses with interactive learning modules, real-time translation, and augmented reality, with an office planned in Busan.",
            "todo": [
                "Establish an office in Busan",
                "Partner with top tech firms for AI integration",
            ],
            "name": "Sophia",
        },
    },
    {
        "label": "sarah",
        "image": "20240601-092000.jpg",
        "audio": "20240601-092030.wav",
        "duration": 85,
        "speech": (
            "Hey, thanks so much for meeting with me today. "
            "I'm Sarah, an autonomous driving algorithm engineer with a passion for advancing mobility technology. "
            "I graduated from MIT with a degree in Electrical Engineering and Computer Science. "
            "I specialized in machine learning and computer vision. "
            "For the past few years, I've been working with top-tier companies like Tesla and Waymo. "
            "I've tackled everything from sensor fusion to computer vision. "
            "One project I really enjoyed was improving our object detection systems in low light conditions. "
            "We managed to make it 20% better at spotting obstacles, which significantly enhances night-time driving safety. "
            "I've also published papers on autonomous driving safety protocols and presented at industry conferences. "
            "I'm eager to bring my experience and passion to your team and contribute to your mission. "
            "How about we chat more over coffee next Wednesday at 2 PM? "
            "Before that, I will send some materials introducing my experience to your email."
        ),
        "reply": {
            "note": "- Sarah is an autonomous driving algorithm engineer interested in joining the company\n"
                    "- She graduated from MIT in Electrical Engineering and Computer Science\n"
                    "- She specialized in machine learning and computer vision\n"
                    "- She has worked with Tesla and Waymo on sensor fusion and computer vision\n"
                    "- She improved object detection in low light by 20%, enhancing night-time safety\n"
                    "- She has published papers on autonomous driving safety protocols\n"
                    "- She proposed coffee next Wednesday at 2 PM and will send materials by email",
            "short_summary": "Sarah, an autonomous driving engineer with experience at Tesla and Waymo, discussed her object detection improvements and proposed meeting over coffee next Wednesday at 2 PM.",
            "todo": [
                "Prepare for the meeting next Wednesday at 2 PM",
                "Watch for the materials Sarah will send by email",
            ],
            "name": "Sarah",
        },
    },
    {
        "label": "charlotte",
        "image": "20240601-093000.jpg",
        "audio": "20240601-093030.wav",
        "duration": 65,
        "speech": (
            "My name is Charlotte, and I am delighted to share a little about myself with you today. "
            "I'm 25 years old, studying Botany. "
            "You can find me playing basketball, painting landscapes, collecting vintage stamps, or practicing the violin. "
            "As for my likes, I absolutely adore Spicy Food. "
            "My love for Spicy Food started during a trip to Mexico. "
            "I was dared to try a local dish known as Chiles en Nogada, notorious for its fiery heat. "
            "On the flip side, I have a strong dislike for Horror Movies. "
            "My dislike can be traced back to a sleepover at a friend's house where we watched a horror movie marathon. "
            "Recently, I've been diving deep into the role of photosynthesis. "
            "Just as panels convert sunlight to electricity, plants capture sunlight to produce sugars they use for food. "
            "This process also produces oxygen as a byproduct, which is essential for life on Earth."
        ),
        "reply": {
            "note": "- Charlotte is a 25 year old Botany student\n"
                    "- Hobbies: basketball, painting landscapes, collecting vintage stamps, violin\n"
                    "- She adores spicy food since trying Chiles en Nogada in Mexico\n"
                    "- She dislikes horror movies after a sleepover marathon\n"
                    "- She studies photosynthesis and compares it to solar panels\n"
                    "- Photosynthesis produces oxygen essential for life on Earth",
            "short_summary": "Charlotte, a Botany student, loves spicy food and creative hobbies, dislikes horror movies, and is currently studying photosynthesis.",
            "todo": [],
            "name": "Charlotte",
        },
    },
]


def write_wav(path: Path, duration_s: float) -> None:
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(1000)
        wav.writeframes(b"\x00\x00" * int(duration_s * 1000))


def slice_lines(speech: str, n_slices: int) -> list[str]:
    """Partition sentences into n groups, repeating the previous tail sentence."""
    sentences = [s.strip() + "." for s in speech.split(". ") if s.strip()]
    sentences[-1] = sentences[-1].rstrip(".") + "."
    per = max(1, len(sentences) // n_slices)
    lines = []
    for i in range(n_slices):
        chunk = sentences[i * per:(i + 1) * per] if i < n_slices - 1 else sentences[i * per:]
        if i > 0 and lines:
            # overlapped windows re-hear the end of the previous slice
            chunk = [sentences[i * per - 1]] + chunk
        lines.append(" ".join(chunk))
    return lines


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    for spk in SPEAKERS:
        stem = spk["audio"].removesuffix(".wav")
        (OUT / spk["image"]).write_bytes(
            f"arsec synthetic face capture\nlabel={spk['label']}\n".encode())
        (OUT / spk["image"].replace(".jpg", ".label")).write_text(spk["label"] + "\n")
        write_wav(OUT / spk["audio"], spk["duration"])
        n = len(plan_slices(spk["duration"]))
        lines = slice_lines(spk["speech"], n)
        assert len(lines) == n, (stem, len(lines), n)
        (OUT / f"{stem}.slices.txt").write_text("\n".join(lines) + "\n")
        reply = "```json\n" + json.dumps(spk["reply"], ensure_ascii=False, indent=2) + "\n```"
        (OUT / f"{stem}.reply.json").write_text(
            json.dumps({"replies": [reply]}, ensure_ascii=False, indent=2) + "\n")
    print(f"wrote corpus for {len(SPEAKERS)} speakers to {OUT}")


if __name__ == "__main__":
    main()
