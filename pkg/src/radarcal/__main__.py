from radarcal.cli import run

run()
